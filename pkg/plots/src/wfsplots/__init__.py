"""Figure renderer for wfslab analysis bundles.

Reads the CSV/JSON files an analysis export produces (see the primary
package's docs/analysis-outputs.md) and draws them. Strictly presentation:
every number shown comes verbatim from the input files.
"""

__version__ = "0.1.0"
