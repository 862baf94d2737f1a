#!/usr/bin/env python
"""Diary to keep the tables and figures of a run in one folder

A Diary owns an output folder. Tables are written as CSV files that start
with a commented header echoing the settings that produced them, so every
figure can be redrawn from the CSV alone and a table can be traced back to
its configuration.
"""
# External modules
import os
import errno
import datetime

import numpy as np
import pandas as pd


def format_value(value):
    """Text form of a setting that float() or int() reads back exactly"""
    if value is None:
        return 'auto'
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _metadata_lines(metadata):
    return ["# {}={}\n".format(key, format_value(value))
            for key, value in metadata.items()]


def write_table(filename, frame, metadata=None, footer=None):
    """Writes frame as CSV preceded by `# key=value` lines.

    Parameters
    ----------
    filename : string
    frame : DataFrame
    metadata : dict, optional
        Written before the column header.
    footer : dict, optional
        Written after the last row, in the same form.
    """
    with open(filename, 'w', newline='') as f:
        f.writelines(_metadata_lines(metadata or {}))
        frame.to_csv(f, index=False, lineterminator='\n')
        f.writelines(_metadata_lines(footer or {}))
    return filename


def read_metadata(filename):
    """The `# key=value` lines of a table, as strings"""
    metadata = {}
    with open(filename) as f:
        for line in f:
            if not line.startswith('#'):
                continue
            key, sep, value = line[1:].strip().partition('=')
            if sep:
                metadata[key.strip()] = value.strip()
    return metadata


def read_table(filename):
    """Reads a table written by write_table.

    Returns
    -------
    frame : DataFrame
    metadata : dict of strings
        Header and footer entries together.
    """
    frame = pd.read_csv(filename, comment='#')
    return frame, read_metadata(filename)


class Diary(object):

    __DESCR_FILENAME = 'description.txt'

    def __init__(self, path='results', overwrite=True):
        self.creation_date = datetime.datetime.now()
        self.path = path
        self.overwrite = overwrite
        self.path_figures = None
        self._create_path()
        self._save_description()

    def _create_path(self):
        original_path = self.path
        i = 0
        while not self.overwrite and os.path.exists(self.path):
            self.path = "{}_{}".format(original_path, i)
            i += 1
        self.path_figures = os.path.join(self.path, 'figures')
        try:
            os.makedirs(self.path)
        except OSError as exception:
            if exception.errno != errno.EEXIST:
                raise

    def _save_description(self):
        with open(os.path.join(self.path, self.__DESCR_FILENAME), 'w') as f:
            f.write(self.__str__())

    def filename(self, name):
        return os.path.join(self.path, name)

    def save_table(self, name, frame, metadata=None, footer=None):
        return write_table(self.filename(name), frame, metadata, footer)

    def __str__(self):
        return ("Date: {}\nPath : {}\nOverwrite : {}"
                "").format(self.creation_date, self.path, self.overwrite)
