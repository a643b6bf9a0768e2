"""
Utilities Package for Wiki-ES

This package contains the data layer the learner works on: the read-only
concept graph with its link relatedness measure, document annotation and
ingestion, the token index used by the Token-GP baseline, and the shared
configuration, logging and error modules.

Modules:
- concept_graph.py: Concept records, inlink sets, link relatedness and d_rel
- annotator.py: Gazetteer annotation, corpus and qrels files, document readers
- token_index.py: Word pseudo-concepts for the exact-token baseline
- config_utils.py: GP and sensitivity parameters, run config files
- log_utils.py: Package logger setup
- errors.py: Exception hierarchy
"""
