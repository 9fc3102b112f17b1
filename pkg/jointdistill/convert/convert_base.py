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
Base classes of the writers and readers of run artifacts.
"""
import json
import os


class WriterBase:
    """ Helper class to write run artifacts under an output directory.
    Files are written to a temporary name and then moved in place, so a
    reader never sees a partial file.
    """
    def __init__(self, **kwargs):
        """
        Create a new instance with some configuration parameters.

        Keyword Args:
            outputDir: directory used to resolve relative file names.
            indent: JSON indentation (default 1).
        """
        self.outputDir = None
        self.indent = 1
        self.update(['outputDir', 'indent'], **kwargs)

    def update(self, attrsList, **kwargs):
        """ Update the some attributes with values from kwargs. """
        for attr in attrsList:
            if attr in kwargs:
                setattr(self, attr, kwargs[attr])

    def _path(self, fn):
        if self.outputDir is not None and not os.path.isabs(fn):
            return os.path.join(self.outputDir, fn)
        return fn

    def _makeParent(self, path):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)

    def _writeBytes(self, path, data):
        path = self._path(path)
        self._makeParent(path)
        tmp = path + '.tmp'
        with open(tmp, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
        return path

    def _writeJson(self, path, obj):
        """ Deterministic JSON (sorted keys, fixed separators). """
        text = json.dumps(obj, sort_keys=True, indent=self.indent,
                          separators=(',', ': ')) + '\n'
        return self._writeBytes(path, text.encode('utf-8'))


class ReaderBase:
    """ Helper class to load run artifacts written by the writers. """
    def __init__(self, **kwargs):
        self.rootDir = kwargs.get('rootDir', None)

    def _path(self, fn):
        if self.rootDir is not None and not os.path.isabs(fn):
            return os.path.join(self.rootDir, fn)
        return fn

    def _readJson(self, path):
        with open(self._path(path), encoding='utf-8') as f:
            return json.load(f)
