# Adaptive QA Orchestrator - Core Library
