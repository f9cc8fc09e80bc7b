r''' csv_writer.py - CSV data products with their JSON metadata sidecars.

Every table goes to ``<name>.csv`` and its metadata to ``<name>.json`` next to it.
'''

import os
import json
import time
import logging
import datetime

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def sidecar_path(filename):
    """ Path of the JSON sidecar that belongs to a CSV file. """
    return os.path.splitext(filename)[0] + '.json'


def _jsonable(obj):
    """ json.dump default hook for numpy scalars and arrays. """
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError('Object of type {} is not JSON serializable'.format(type(obj).__name__))


def dumps(obj):
    """ JSON text for reports that may hold numpy values. """
    return json.dumps(obj, default=_jsonable, indent=2, sort_keys=True)


def write_json(filename_out, obj):
    with open(filename_out, 'w') as fh:
        fh.write(dumps(obj))
        fh.write('\n')


def read_json(filename):
    with open(filename, 'r') as fh:
        return json.load(fh)


def write_table(filename_out, columns, meta=None, column_order=None):
    """ Write a table to CSV and its metadata to the sidecar.

    Args:
        filename_out (str): Name of output CSV file
        columns (dict or DataFrame): column name -> 1-D array
        meta (dict): sidecar content; software_version and created are added
        column_order (list): fixed column order of the product
    """
    t0 = time.time()
    df = columns if isinstance(columns, pd.DataFrame) else pd.DataFrame(columns)
    if column_order is not None:
        df = df[list(column_order)]
    df.to_csv(filename_out, index=False, float_format=FLOAT_FORMAT)

    from implosion_lab import __version__
    side = {} if meta is None else dict(meta)
    side.setdefault('software_version', __version__)
    side['created'] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    side['columns'] = list(df.columns)
    side['rows'] = int(len(df))
    write_json(sidecar_path(filename_out), side)

    t1 = time.time()
    logger.info('Wrote %s (%d rows) in %2.2fsec' % (filename_out, len(df), t1 - t0))
    return df


def read_table(filename, required=None):
    """ Read a CSV product and its sidecar (empty dict when there is none).

    Args:
        filename (str): CSV file
        required (list): columns that must be present
    """
    df = pd.read_csv(filename)
    if required is not None:
        missing = [col for col in required if col not in df.columns]
        if missing:
            logger.error('read_table: {} lacks columns {}'.format(filename, missing))
            raise KeyError('{} lacks columns {}'.format(filename, missing))
    side = sidecar_path(filename)
    meta = read_json(side) if os.path.exists(side) else {}
    return df, meta
