"""
Evaluation of trained runs.

    metrics          - top-k accuracy and support weighted mean average precision
    data_structures  - the parametrized result objects stored in the run data store
    evaluation       - single-modality evaluation of a checkpoint
    fewshot          - the few-shot protocol on frozen encoders
    exports          - embedding tables and attention maps
"""
