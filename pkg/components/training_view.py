"""
Training View Component
Expected-reward curves and action selection distributions of a training run.
"""

import pandas as pd
import streamlit as st


def training_tab(run: dict):
    """Render the training diagnostics loaded by `src.diagnostics.load_run`."""
    st.header("Training")

    if "expected_rewards" not in run:
        st.info("No training diagnostics in this run directory. Run `python -m src.cli train` first.")
        return

    summary = run.get("summary", {})
    if summary:
        col1, col2, col3 = st.columns(3)
        col1.metric("Episodes", summary.get("episodes", 0))
        col2.metric("Mean reward", f"{summary.get('mean_reward', 0.0):.4f}")
        if "cumulative_regret" in summary:
            col3.metric("Cumulative regret", f"{summary['cumulative_regret']:.2f}")

        rows = [{"context": label, **values} for label, values in summary.get("contexts", {}).items()]
        if rows:
            st.subheader("Converged selections")
            st.dataframe(pd.DataFrame(rows), use_container_width=True, hide_index=True)

    expected = run["expected_rewards"]
    contexts = sorted(expected["context"].unique())
    context = st.selectbox("Context", contexts, key="training_context")

    subset = expected[expected["context"] == context]
    top = _top_actions(subset, limit=st.slider("Actions shown", 1, 20, 5, key="training_top"))
    curves = subset[subset["action_id"].isin(top)].pivot(index="step", columns="action_id", values="expected_reward")
    if subset["reference"].notna().any():
        curves["reference"] = subset.groupby("step")["reference"].first()

    st.subheader("Expected reward")
    st.line_chart(curves)

    if "selection_dist" in run:
        dist = run["selection_dist"]
        dist = dist[(dist["context"] == context) & dist["action_id"].isin(top)]
        st.subheader("Selection distribution")
        st.line_chart(dist.pivot(index="timestep", columns="action_id", values="frequency"))


def _top_actions(expected: pd.DataFrame, limit: int):
    """Actions with the highest expected reward at the last logged step."""
    last = expected[expected["step"] == expected["step"].max()]
    return last.sort_values("expected_reward", ascending=False)["action_id"].head(limit).tolist()
