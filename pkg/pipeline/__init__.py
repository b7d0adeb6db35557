# Pipeline: experiment orchestration
