from typing import Dict, List, Tuple

# half-open [start, end)
_range_t = Tuple[int, int]

char_range_t = _range_t
token_range_t = _range_t
byte_range_t = _range_t

tags_t = List[str]
token_ids_t = List[int]

# state -> token id -> successor state
token_edges_t = Dict[int, Dict[int, int]]
