"""
Binary index file.

    "DTWI" | version u32 | metadata length u32 | metadata (YAML, UTF-8)
    sequence table length u64 | per entry: id u64, length u32, samples f64 ...
    PAA table length u64      | per entry: n_paa x f64
    tree length u64           | preorder node records: kind u8, low n_paa x f64, high n_paa x f64,
                                child count u32, child offsets u64 (internal) or entry ids u64 (leaf)
    CRC-32 of all preceding bytes u32

All numbers are little-endian. Child offsets are relative to the start of the tree section.
"""
import logging
import os
import struct
import zlib

import numpy as np
import yaml

from dtwindex import __version__
from dtwindex.auxiliary import canonical_yaml, params_hash
from dtwindex.core_dtw import TimeSeries
from dtwindex.errors import (IndexChecksumError, IndexFileError, IndexTruncatedError, IndexVersionError,
                             InvariantError, UsageError)
from dtwindex.index import DtwIndex, IndexConfig, IndexEntry
from dtwindex.lower_bounds import extend
from dtwindex.paa import Mbr, PaaVector, paa_transform
from dtwindex.rtree import RTreeNode, check_tree, iter_preorder

logger = logging.getLogger(__name__)

MAGIC = b'DTWI'
FORMAT_VERSION = 1

LEAF = 1
INTERNAL = 0

_F64 = np.dtype('<f8')


def _f64_bytes(values):
    return np.ascontiguousarray(values, dtype=_F64).tobytes()


def _record_size(node, n_paa):
    return 1 + 16 * n_paa + 4 + 8 * len(node.children)


def _encode_tree(root, n_paa):
    nodes = list(iter_preorder(root))
    offsets = {}
    pos = 0
    for node in nodes:
        offsets[id(node)] = pos
        pos += _record_size(node, n_paa)
    chunks = []
    for node in nodes:
        chunks.append(struct.pack('<B', LEAF if node.leaf else INTERNAL))
        chunks.append(_f64_bytes(node.box.low))
        chunks.append(_f64_bytes(node.box.high))
        chunks.append(struct.pack('<I', len(node.children)))
        if node.leaf:
            refs = node.children
        else:
            refs = [offsets[id(child)] for child in node.children]
        chunks.append(struct.pack(f'<{len(refs)}Q', *refs))
    return b''.join(chunks)


def index_metadata(index):
    params = index.config.to_params()
    meta = dict(params)
    meta.update({'format': 'dtwindex',
                 'created_by': __version__,
                 'entry_count': len(index),
                 'params_hash': params_hash(params)})
    return meta


def save_index(index, path):
    """
    :param index: DtwIndex
    :param path: output file name
    """
    n_paa = index.config.n_paa
    meta = canonical_yaml(index_metadata(index)).encode('utf-8')

    seq_table = b''.join(struct.pack('<QI', eid, len(entry.series)) + _f64_bytes(entry.series.values)
                         for eid, entry in index.entries.items())
    paa_table = b''.join(_f64_bytes(entry.paa.coords) for entry in index.entries.values())
    tree = _encode_tree(index.root, n_paa)

    parts = [MAGIC, struct.pack('<II', FORMAT_VERSION, len(meta)), meta]
    for section in (seq_table, paa_table, tree):
        parts.append(struct.pack('<Q', len(section)))
        parts.append(section)
    body = b''.join(parts)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(body)
        f.write(struct.pack('<I', zlib.crc32(body) & 0xffffffff))


class _Reader:

    def __init__(self, data, start, end, what):
        self.data = data
        self.pos = start
        self.end = end
        self.what = what

    def take(self, n):
        if self.pos + n > self.end:
            raise IndexTruncatedError(f'index file is truncated inside the {self.what}')
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count):
        return np.frombuffer(self.take(8 * count), dtype=_F64).astype(np.float64)


def _split_sections(data):
    if len(data) < 4 or data[:4] != MAGIC:
        if len(data) < 4 and MAGIC.startswith(data):
            raise IndexTruncatedError('index file is truncated inside the header')
        raise IndexFileError('not a dtwindex index file (bad magic bytes)')
    payload_end = len(data) - 4
    header = _Reader(data, 4, len(data), 'header')
    version, = header.unpack('<I')
    if version != FORMAT_VERSION:
        raise IndexVersionError(f'index file format version {version} is not supported (expected {FORMAT_VERSION})')
    header.end = payload_end
    meta_len, = header.unpack('<I')
    meta = header.take(meta_len)
    sections = []
    for name in ('sequence table', 'PAA table', 'tree section'):
        header.what = name
        length, = header.unpack('<Q')
        start = header.pos
        header.take(length)
        sections.append((start, start + length, name))
    if header.pos != payload_end:
        raise IndexFileError(f'{payload_end - header.pos} unexpected bytes before the checksum')
    stored, = struct.unpack('<I', data[payload_end:])
    if stored != zlib.crc32(data[:payload_end]) & 0xffffffff:
        raise IndexChecksumError('index file checksum does not match its content')
    return meta, sections


def _config_from_meta(meta):
    try:
        return IndexConfig(band_radius=meta['band_radius'],
                           n_paa=meta['n_paa'],
                           pad_value=meta['pad_value'],
                           node_capacity=meta['node_capacity'],
                           lmax=meta['lmax'],
                           keogh_plus_filter=meta.get('keogh_plus_filter', False))
    except (KeyError, TypeError, UsageError) as e:
        raise IndexFileError(f'invalid index metadata: {e}')


def _decode_tree(data, start, end, n_paa, offset=0):
    r = _Reader(data, start + offset, end, 'tree section')
    kind, = r.unpack('<B')
    box = Mbr(r.floats(n_paa), r.floats(n_paa))
    count, = r.unpack('<I')
    refs = r.unpack(f'<{count}Q')
    if kind == LEAF:
        return RTreeNode(box, tuple(int(i) for i in refs), True, count)
    if kind != INTERNAL:
        raise IndexFileError(f'unknown tree node kind {kind}')
    children = tuple(_decode_tree(data, start, end, n_paa, ref) for ref in refs)
    return RTreeNode(box, children, False, sum(child.size for child in children))


def load_index(path):
    """
    :param path: file written by save_index
    :return: DtwIndex answering every query exactly like the saved one
    """
    with open(path, 'rb') as f:
        data = f.read()
    meta_bytes, sections = _split_sections(data)
    try:
        meta = yaml.safe_load(meta_bytes.decode('utf-8'))
    except (UnicodeDecodeError, yaml.YAMLError) as e:
        raise IndexFileError(f'index metadata cannot be parsed: {e}')
    if not isinstance(meta, dict) or meta.get('format') != 'dtwindex':
        raise IndexFileError('index metadata is not a dtwindex document')
    config = _config_from_meta(meta)
    count = meta.get('entry_count')
    if not isinstance(count, int) or count < 1:
        raise IndexFileError(f'invalid entry count in the index metadata: {count!r}')
    n_paa = config.n_paa

    (seq_start, seq_end, _), (paa_start, paa_end, _), (tree_start, tree_end, _) = sections
    seqs = _Reader(data, seq_start, seq_end, 'sequence table')
    paas = _Reader(data, paa_start, paa_end, 'PAA table')
    ext = config.extension
    entries = {}
    for _ in range(count):
        eid, length = seqs.unpack('<QI')
        series = TimeSeries(seqs.floats(length), id=eid)
        paa = PaaVector(paas.floats(n_paa), n_paa, config.lmax)
        if not np.array_equal(paa.coords, paa_transform(extend(series, ext), n_paa).coords):
            raise IndexFileError(f'stored PAA vector of entry {eid} does not match its sequence')
        entries[eid] = IndexEntry(series, paa)
    if seqs.pos != seq_end or paas.pos != paa_end or len(entries) != count:
        raise IndexFileError('index tables do not match the entry count in the metadata')

    root = _decode_tree(data, tree_start, tree_end, n_paa)
    try:
        leaf_ids = check_tree(root, {eid: e.paa.coords for eid, e in entries.items()}, config.node_capacity)
    except (InvariantError, KeyError) as e:
        raise IndexFileError(f'index tree is inconsistent: {e}')
    if leaf_ids != set(entries):
        raise IndexFileError('index tree does not reference every stored entry exactly once')
    logger.debug(f'index with {count} entries loaded from {path}')
    return DtwIndex(config, root, entries)
