"""Timeline-aligned video-to-emotion pipeline."""

from src.pipeline.assets import Frame, VideoAssets, load_assets, load_assets_dir
from src.pipeline.runner import VideoResult, aggregate_video, run_segment, run_video, write_predictions
from src.pipeline.segments import Segment, prepare_inputs, segment_timeline
from src.pipeline.store import SegmentStore

__all__ = ['Frame', 'Segment', 'SegmentStore', 'VideoAssets', 'VideoResult', 'aggregate_video', 'load_assets',
           'load_assets_dir', 'prepare_inputs', 'run_segment', 'run_video', 'segment_timeline',
           'write_predictions']
