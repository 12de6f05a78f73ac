"""
Comparison View Component
Per-context F1 / latency of AQA against the pruned baseline graph.
"""

import streamlit as st

from src.diagnostics import comparison_frame


def comparison_tab(run: dict):
    st.header("AQA vs Baseline")

    if "comparison" not in run:
        st.info("No comparison.json in this run directory. Run `python -m src.cli compare` first.")
        return

    document = run["comparison"]
    frame = comparison_frame(document)
    st.caption(f"Seed {document.get('seed')}, {document.get('repeats')} repeat(s) per test question")

    metric = st.radio("Metric", ["f1", "latency_s", "reward"], horizontal=True, key="comparison_metric")
    st.dataframe(
        frame.pivot(index="context", columns="policy", values=metric),
        use_container_width=True,
    )

    st.subheader("Pruned baseline graph")
    edges = document.get("baseline_graph", {}).get("edges", [])
    st.code(", ".join(f"{u}->{v}" for u, v in edges) or "(empty)", language="text")
    if "edge_probs" in run:
        st.line_chart(run["edge_probs"].set_index("epoch").drop(columns=["mean_reward"]))
    elif document.get("baseline_edge_probs"):
        st.bar_chart(document["baseline_edge_probs"])
