"""Ephemeral-UI code generation engine for computational notebooks.

The engine inserts a generated-widget step between a natural-language
request typed into a notebook prompt cell and the code that finally lands
in the notebook: an advisor picks a concrete next step, a planner
describes widgets as JSON, a coder emits widget-construction code that
runs in the notebook kernel, and after the user interacts with the
rendered panel an injector turns the widget values into a new code cell.
"""

__version__ = "0.1.0"
