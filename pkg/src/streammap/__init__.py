"""streammap: live text streams rendered as stable topic maps.

The pipeline turns a stream of short text messages into a sequence of
map frames: messages are clustered into subtopics via TF-IDF similarity,
each connected component is laid out by stress majorization, aligned to
its previous placement by a rigid Procrustes fit, packed onto a shared
grid with a stability-first polyomino packer, and rendered as countries
with stable colors and term labels.
"""

__version__ = "0.1.0"

from streammap.messages import Message, Query, Window, matches

__all__ = ["Message", "Query", "Window", "matches", "__version__"]
