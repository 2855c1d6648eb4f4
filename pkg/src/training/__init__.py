"""Synthetic data and toy training."""

from src.training.synthetic import Sample, make_dataset, make_sample, synthetic_assets
from src.training.trainer import TrainResult, TrainSettings, train_toy, write_training_outputs

__all__ = ['Sample', 'TrainResult', 'TrainSettings', 'make_dataset', 'make_sample', 'synthetic_assets',
           'train_toy', 'write_training_outputs']
