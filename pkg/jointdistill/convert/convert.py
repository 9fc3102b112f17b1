# **************************************************************************
# *
# * jointdistill - adaptive multi-teacher distillation laboratory
# *
# * This program is free software; you can redistribute it and/or modify
# * it under the terms of the GNU General Public License as published by
# * the Free Software Foundation; either version 3 of the License, or
# * (at your option) any later version.
# *
# * This program is distributed in the hope that it will be useful,
# * but WITHOUT ANY WARRANTY; without even the implied warranty of
# * MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# * GNU General Public License for more details.
# *
# **************************************************************************
"""
Checkpoint manifests: a JSON file listing every stored array
{name, shape, dtype, byte_offset, byte_length} plus a sidecar blob with
the little-endian float64 values concatenated in manifest order.
"""
import json
import logging
import os
from collections import OrderedDict

import numpy as np

from jointdistill.constants import DTYPE_NAME, BLOB_EXT, MANIFEST_EXT
from jointdistill.errors import ManifestError, ShapeError, ConfigError
from .convert_base import WriterBase, ReaderBase

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
WIRE_DTYPE = np.dtype('<f8')


def blobPath(manifestPath):
    root, ext = os.path.splitext(manifestPath)
    return (root if ext == MANIFEST_EXT else manifestPath) + BLOB_EXT


class CheckpointWriter(WriterBase):
    """ Writes named float64 arrays as manifest + blob. """

    def write(self, manifestPath, arrays, identity=None, extra=None):
        """
        Params:
            manifestPath: path of the JSON manifest; the blob goes next to
                it with the .bin extension.
            arrays: ordered mapping name -> array; order is preserved.
            identity: model identity (arch, widths, n_classes, seed...).
            extra: any other JSON-serializable state.
        """
        manifestPath = self._path(manifestPath)
        entries = []
        chunks = []
        offset = 0
        for name, value in arrays.items():
            value = np.ascontiguousarray(value, dtype=WIRE_DTYPE)
            data = value.tobytes()
            entries.append({'name': name, 'shape': list(value.shape),
                            'dtype': DTYPE_NAME, 'byte_offset': offset,
                            'byte_length': len(data)})
            chunks.append(data)
            offset += len(data)

        blob = blobPath(manifestPath)
        self._writeBytes(blob, b''.join(chunks))
        manifest = {'version': MANIFEST_VERSION,
                    'blob': os.path.basename(blob),
                    'blob_length': offset,
                    'entries': entries,
                    'identity': identity or {},
                    'extra': extra or {}}
        self._writeJson(manifestPath, manifest)
        logger.debug("checkpoint %s: %d arrays, %d bytes", manifestPath,
                     len(entries), offset)
        return manifestPath


class CheckpointReader(ReaderBase):
    """ Reads and validates a manifest + blob pair. """

    def read(self, manifestPath):
        """ Returns (arrays, identity, extra). """
        manifestPath = self._path(manifestPath)
        try:
            with open(manifestPath, encoding='utf-8') as f:
                manifest = json.load(f)
        except (OSError, ValueError) as ex:
            raise ManifestError(manifestPath, "unreadable manifest (%s)" % ex)
        for key in ('blob', 'entries'):
            if key not in manifest:
                raise ManifestError(manifestPath, "missing '%s'" % key)

        blob = os.path.join(os.path.dirname(manifestPath), manifest['blob'])
        try:
            with open(blob, 'rb') as f:
                data = f.read()
        except OSError as ex:
            raise ManifestError(manifestPath, "missing blob (%s)" % ex)
        if 'blob_length' in manifest and len(data) != manifest['blob_length']:
            raise ManifestError(manifestPath, "blob has %d bytes, manifest "
                                "says %d" % (len(data), manifest['blob_length']))

        arrays = OrderedDict()
        for entry in manifest['entries']:
            arrays[entry['name']] = self._readEntry(manifestPath, entry, data)
        return arrays, manifest.get('identity', {}), manifest.get('extra', {})

    def _readEntry(self, manifestPath, entry, data):
        try:
            name = entry['name']
            shape = tuple(int(s) for s in entry['shape'])
            offset = int(entry['byte_offset'])
            length = int(entry['byte_length'])
        except (KeyError, TypeError, ValueError):
            raise ManifestError(manifestPath, "malformed entry %r" % (entry,))
        if entry.get('dtype') != DTYPE_NAME:
            raise ManifestError(manifestPath, "entry %s has dtype %r"
                                % (name, entry.get('dtype')))
        count = int(np.prod(shape)) if shape else 1
        if length != count * WIRE_DTYPE.itemsize:
            raise ManifestError(manifestPath, "entry %s: %d bytes for shape %s"
                                % (name, length, list(shape)))
        if offset < 0 or offset + length > len(data):
            raise ManifestError(manifestPath, "entry %s runs past the blob"
                                % name)
        values = np.frombuffer(data, dtype=WIRE_DTYPE, count=count,
                               offset=offset)
        return values.astype(np.float64).reshape(shape)


def writeCheckpoint(manifestPath, arrays, identity=None, extra=None):
    return CheckpointWriter().write(manifestPath, arrays, identity, extra)


def readCheckpoint(manifestPath):
    return CheckpointReader().read(manifestPath)


def saveModel(manifestPath, model, extra=None):
    """ Single-model checkpoint (parameters and BN buffers). """
    return writeCheckpoint(manifestPath, model.stateDict(), model.identity(),
                           extra)


def loadModel(manifestPath):
    """ Rebuild a model from its checkpoint. Returns (model, extra). """
    from jointdistill.models import build_from_identity
    arrays, identity, extra = readCheckpoint(manifestPath)
    if not identity:
        raise ManifestError(manifestPath, "no model identity")
    try:
        model = build_from_identity(identity)
        model.loadStateDict(arrays)
    except KeyError as ex:
        raise ManifestError(manifestPath, "missing entry %s" % ex)
    except (ShapeError, ConfigError) as ex:
        raise ManifestError(manifestPath, str(ex))
    return model, extra


def prefixed(prefix, arrays):
    return OrderedDict(('%s/%s' % (prefix, k), v) for k, v in arrays.items())


def unprefixed(prefix, arrays):
    start = prefix + '/'
    return OrderedDict((k[len(start):], v) for k, v in arrays.items()
                       if k.startswith(start))
