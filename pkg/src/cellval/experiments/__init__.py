"""Benchmark protocols built on the valuation core: cell-outlier injection,
cell fixation, label-noise detection and backdoor trigger localization."""
