from .correlation import (CorrelationTable, FixPsnr, FixSsim, correlation_study,
                          projected_pffl_descent)
from .experiment import ExperimentConfig, ReportTable, lower_median, run_experiment
from .fixtures import fixture_set, tripartite
from .report import emit_report
