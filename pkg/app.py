"""
Adaptive QA Orchestration - Dashboard
A Streamlit application for inspecting the action space, training runs and
the AQA-vs-baseline comparison.

    streamlit run app.py -- --run-dir runs/default --config configs/individual.yaml
"""

import argparse
from pathlib import Path

import streamlit as st
from dotenv import load_dotenv

from components.action_space_view import action_space_tab
from components.comparison_view import comparison_tab
from components.training_view import training_tab
from src.config import load_config
from src.diagnostics import load_run
from src.errors import AQAError

load_dotenv()

st.set_page_config(
    page_title="Adaptive QA Orchestration",
    page_icon="",
    layout="wide",
    initial_sidebar_state="expanded"
)


def parse_args():
    parser = argparse.ArgumentParser()
    parser.add_argument("--run-dir", default=None)
    parser.add_argument("--config", default=None)
    args, _ = parser.parse_known_args()
    return args


def main():
    """Main application function."""
    args = parse_args()
    st.title("Adaptive QA Orchestration")

    with st.sidebar:
        st.header("Settings")
        config_path = st.text_input("Config file", value=args.config or "configs/individual.yaml")
        try:
            config = load_config(Path(config_path) if config_path else None)
        except AQAError as e:
            st.error(f"Cannot load config: {e}")
            return

        run_dir = st.text_input("Run directory", value=args.run_dir or config.output.dir)
        st.markdown(f"""
        - **Agents:** {', '.join(config.agents)}
        - **Contexts:** {', '.join(config.schema)}
        - **alpha:** {config.bandit.alpha}
        - **beta:** {config.reward.beta} ({config.reward.penalty_preset} penalty)
        """)

    run = load_run(Path(run_dir)) if run_dir and Path(run_dir).exists() else {}
    if run_dir and not run:
        st.warning(f"No run artifacts found in {run_dir}")

    tab1, tab2, tab3 = st.tabs(["Action Space", "Training", "Comparison"])
    with tab1:
        action_space_tab(config)
    with tab2:
        training_tab(run)
    with tab3:
        comparison_tab(run)


if __name__ == "__main__":
    main()
