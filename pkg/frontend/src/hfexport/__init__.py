"""Convert BERT-family hub checkpoints into the PRNC1 interchange format."""

from .export import ExportError, export, read_safetensors
from .mapping import UnmappedTensorError, canonical_name, map_tensor_names
from .prnc_writer import write_checkpoint

__version__ = "0.1.0"
