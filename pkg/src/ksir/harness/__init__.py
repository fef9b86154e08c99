from .bench import BenchConfig, MetricsReport, run_bench
from .synth import GenParams, gen_stream

__all__ = ["BenchConfig", "MetricsReport", "run_bench", "GenParams", "gen_stream"]
