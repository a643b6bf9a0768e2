"""
Components Package for Wiki-ES

Modules:
- query_model.py: Query trees, the concept evaluator, weighted voting and rule files
- gp_engine.py: Island-model genetic programming and threshold calibration
- evaluation.py: Metrics, macro averages and relative-difference comparison
- experiment.py: Per-topic Wiki-ES versus Token-GP runs
"""
