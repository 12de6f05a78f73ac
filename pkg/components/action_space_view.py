"""
Action Space View Component
Lists the enumerated strategy graphs for the configured agents.
"""

import streamlit as st

from src.config import ExperimentConfig
from src.diagnostics import action_space_frame
from src.harness import build_action_space, build_agents


def action_space_tab(config: ExperimentConfig):
    """Render the action space of `config` as a filterable table."""
    st.header("Action Space")

    agents = build_agents(config)
    graphs = build_action_space(config, agents)
    frame = action_space_frame(graphs)

    col1, col2, col3 = st.columns(3)
    col1.metric("Agents", len(agents))
    col2.metric("Actions", len(graphs))
    col3.metric("Mode", config.action_space.mode)

    max_edges = int(frame["edges"].max())
    if max_edges > 1:
        edge_limit = st.slider("Maximum edges", 1, max_edges, max_edges, key="action_space_edges")
        frame = frame[frame["edges"] <= edge_limit]

    agent_filter = st.multiselect("Graphs involving", [a.name for a in agents], key="action_space_agents")
    for name in agent_filter:
        frame = frame[frame["graph"].str.contains(f"{name}->", regex=False)]

    st.dataframe(frame, use_container_width=True, hide_index=True)
