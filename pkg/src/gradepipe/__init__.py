"""Automatic assessment and feedback pipeline for programming exercises.

Three processors (incoming mail, testing, outgoing mail) communicate
through durable file-system queues under a single course root directory.
"""

__version__ = "0.1.0"
