"""Figure and table rendering for tsbench result directories.

Reads only the documented output files (manifest.json, samples.csv,
summary.csv, resources.csv) and turns them into the standard report
artifacts: latency box plots, rate-vs-clients charts, rolling-rate
timelines, resource timelines, and query-statistics tables.
"""

__version__ = "0.1.0"
