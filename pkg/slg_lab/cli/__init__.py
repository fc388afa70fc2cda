"""Command-line surface: configuration, manifests, exports and analysis.

Submodules are imported explicitly (``slg_lab.cli.main`` pulls in the whole engine).
"""
