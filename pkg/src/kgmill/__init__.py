"""kgmill: populate terminology-mapped knowledge graphs from LLM queries.

The pipeline imports a terminology, derives code sets, iterates a code set
through relationship prompts against an LLM provider, mitigates bad responses
(repeat sampling, specificity enforcement, no-write elements, dictionary
keys), writes the result as a triple store, and maps free-text objects back
to codes by exact minimum cosine distance over configurable vector sets.
"""

__version__ = "0.1.0"
