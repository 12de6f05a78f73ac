# Adaptive QA Orchestrator - Dashboard Components
