# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Reading and writing of data products: CSV or JSON tables, and the JSON
sidecars describing the run that produced them.
"""
import json
import os

import numpy as np
from astropy import log
from astropy.io.ascii import InconsistentTableError
from astropy.table import Table

from ..exceptions import UsageError

__all__ = ['write_table', 'read_table', 'write_sidecar', 'read_sidecar',
           'sidecar_path']

FLOAT_FORMAT = '%.17g'


def _float_formats(table):
    return {name: FLOAT_FORMAT for name in table.colnames
            if table[name].dtype.kind == 'f'}


def write_table(table, path, fmt='csv'):
    """
    Write ``table`` with every float at full double precision.

    Parameters
    ----------
    table : `~astropy.table.Table`
    path : str
        Output file
    fmt : {'csv', 'json'}
        ``'json'`` writes an object mapping column names to value lists

    Returns
    -------
    path : str
    """
    if fmt == 'csv':
        table.write(path, format='ascii.csv', overwrite=True,
                    formats=_float_formats(table))
    elif fmt == 'json':
        data = {name: np.asarray(table[name]).tolist()
                for name in table.colnames}
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(data, fh, indent=1)
            fh.write('\n')
    else:
        raise UsageError('unknown output format {0!r}'.format(fmt))
    log.info('wrote {0} ({1} rows)'.format(path, len(table)))
    return path


def _first_bad_line(path, names):
    """
    1-based line number and message of the first malformed CSV row.
    """
    with open(path, encoding='utf-8') as fh:
        lines = fh.read().splitlines()
    if not lines:
        return None, 'empty file'
    header = [h.strip() for h in lines[0].split(',')]
    wanted = [header.index(n) for n in names if n in header]
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(',')
        if len(fields) != len(header):
            return number, 'expected {0} fields, found {1}'.format(
                len(header), len(fields))
        for i in wanted:
            try:
                float(fields[i])
            except ValueError:
                return number, 'column {0!r} is not numeric: {1!r}'.format(
                    header[i], fields[i])
    return None, None


def read_table(path, required=()):
    """
    Read a table written by `write_table`.

    Parameters
    ----------
    path : str
        CSV (``.csv``) or JSON (``.json``) file
    required : sequence of str
        Columns that must be present and numeric

    Returns
    -------
    table : `~astropy.table.Table`

    Raises
    ------
    UsageError
        If the file is missing or malformed, with the offending line when it
        can be located
    """
    if not os.path.exists(path):
        raise UsageError('no such file', filename=path)
    if path.endswith('.json'):
        try:
            with open(path, encoding='utf-8') as fh:
                table = Table(json.load(fh))
        except (ValueError, TypeError) as exc:
            raise UsageError('malformed JSON table: {0}'.format(exc),
                             filename=path)
    else:
        try:
            table = Table.read(path, format='ascii.csv')
        except (InconsistentTableError, ValueError) as exc:
            line, message = _first_bad_line(path, required)
            raise UsageError(message or 'malformed CSV: {0}'.format(exc),
                             filename=path, line=line)

    missing = [name for name in required if name not in table.colnames]
    if missing:
        raise UsageError('missing columns {0}'.format(missing),
                         filename=path, line=1)
    for name in required:
        if table[name].dtype.kind not in 'fiu':
            line, message = _first_bad_line(path, [name])
            raise UsageError(message or 'column {0!r} is not numeric'
                             .format(name), filename=path, line=line)
    return table


def sidecar_path(path):
    """
    Path of the JSON sidecar of the data file ``path``.
    """
    return os.path.splitext(path)[0] + '.sidecar.json'


def write_sidecar(path, command, parameters, seed, threads, outputs):
    """
    Write the UTF-8 JSON run descriptor.

    Parameters
    ----------
    path : str
        Sidecar file
    command : str
        Sub-command that produced the outputs
    parameters : dict
        Every parameter of the run
    seed : int or None
    threads : int
    outputs : list of str
        Files written by the run

    Returns
    -------
    path : str
    """
    from .. import __version__

    descriptor = dict(command=command, parameters=parameters, seed=seed,
                      threads=threads, version=__version__,
                      outputs=[os.path.basename(o) for o in outputs])
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True,
                  ensure_ascii=False)
        fh.write('\n')
    return path


def read_sidecar(path):
    """
    Read a JSON run descriptor written by `write_sidecar`.

    Raises
    ------
    UsageError
        If the file is missing, is not JSON or lacks a required key
    """
    if not os.path.exists(path):
        raise UsageError('no such file', filename=path)
    try:
        with open(path, encoding='utf-8') as fh:
            descriptor = json.load(fh)
    except ValueError as exc:
        raise UsageError('malformed sidecar: {0}'.format(exc), filename=path,
                         line=getattr(exc, 'lineno', None))
    for key in ('command', 'parameters', 'seed', 'threads', 'version',
                'outputs'):
        if key not in descriptor:
            raise UsageError('sidecar lacks the {0!r} key'.format(key),
                             filename=path)
    return descriptor
