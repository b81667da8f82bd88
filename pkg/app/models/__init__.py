from .experiment_report import ExperimentReport
