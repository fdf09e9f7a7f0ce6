try:
    from ._cfscm import *  # noqa: F401,F403
except ImportError:  # in-tree builds put the module on PYTHONPATH directly
    from _cfscm import *  # noqa: F401,F403
