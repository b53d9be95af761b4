"""ontoforge: LLM-assisted ontology learning for the casting domain.

Documents go in; a validated concept/relation graph comes out. The pipeline
stages are corpus I/O, markup grammars, an LLM gateway (with an offline mock),
knowledge distillation, three extraction strategies, evaluation, expert
review, and graph export.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    AnnotatedText,
    Dataset,
    Document,
    TermSpan,
    TopConcept,
    Triple,
)
