"""vid2dialog: turn instructional-video sources into expert/novice dialogue datasets.

The pipeline has three stages (instruction formation, dialogue generation,
video localization) followed by quality control, plus a dataset store and
an evaluation harness for benchmarking assistant models on the result.
"""

__version__ = "0.1.0"
