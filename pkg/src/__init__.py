"""
Wiki-ES - Evolved boolean concept queries with Wikipedia link relatedness.

This package contains the modules that learn, apply and evaluate Wiki-ES
document filtering rules. Documents are reduced to sets of Wikipedia concepts,
queries are boolean trees over concepts, and a concept counts as present when
the document mentions it or a sufficiently related concept.

Subpackages:
- components: Query model, GP engine, evaluation and the experiment runner
- utils: Concept graph, annotation, token index, configuration, logging and errors

Main modules:
- main.py: Command-line entry point and subcommand dispatch
- test_*.py: Test modules for the components and utilities
"""
