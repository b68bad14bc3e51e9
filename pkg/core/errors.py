"""
Error types shared across the library and the command line
"""
from typing import Optional


class DocGraphError(Exception):
    """Base class for all errors raised on purpose by this package"""

    error_code = "DOCGRAPH_ERROR"


class ConfigError(DocGraphError, ValueError):
    """Invalid configuration value or violated input precondition"""

    error_code = "CONFIG_ERROR"


class ParseError(DocGraphError, ValueError):
    """Malformed line in a corpus, embedding or config file"""

    error_code = "PARSE_ERROR"

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        location = ""
        if path is not None:
            location += f"{path}"
        if line_number is not None:
            location += f":{line_number}"
        super().__init__(f"{location}: {message}" if location else message)


class EmptyDocument(DocGraphError, ValueError):
    """Document with no usable sentence after segmentation and tokenization"""

    error_code = "EMPTY_DOCUMENT"

    def __init__(self, doc_id: Optional[str] = None, message: str = "document has no tokens"):
        self.doc_id = doc_id
        super().__init__(f"{doc_id}: {message}" if doc_id else message)


class ContractViolation(DocGraphError, AssertionError):
    """A library call was made with arguments outside its contract"""

    error_code = "CONTRACT_VIOLATION"
