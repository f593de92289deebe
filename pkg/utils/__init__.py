"""
Utility modules for the cloning-eavesdropper lab
"""

from .logger import get_logger, log_function_start, log_function_end, log_processing_step, log_error_with_context, log_validation_result, log_performance_metric
from .errors import CloneLabError, DomainError, ConfigError, DataError, AnalysisError, RankDeficientError, NoCrossoverError, AnalysisResult
from .seeding import derive_rng

__all__ = [
    'get_logger',
    'log_function_start',
    'log_function_end',
    'log_processing_step',
    'log_error_with_context',
    'log_validation_result',
    'log_performance_metric',
    'CloneLabError',
    'DomainError',
    'ConfigError',
    'DataError',
    'AnalysisError',
    'RankDeficientError',
    'NoCrossoverError',
    'AnalysisResult',
    'derive_rng',
]
