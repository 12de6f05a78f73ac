# Adaptive QA Orchestrator - Extensions
