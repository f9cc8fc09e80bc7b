import time
import logging

import h5py
import hdf5plugin
import numpy as np

logger = logging.getLogger(__name__)


def write_fields(filename_out, groups, attrs=None):
    """ Write stage fields to one HDF5 file, one group per stage.

    Args:
        filename_out (str): Name of output file
        groups (dict): group name -> {dataset name -> array or scalar}
        attrs (dict): file-level attributes (config hash, version, ...)
    """

    #For timing how long it takes to write a file.
    t0 = time.time()

    with h5py.File(filename_out, 'w') as h5:

        h5.attrs['CLASS'] = 'IMPLOSION_LAB'
        h5.attrs['VERSION'] = '1.0'
        for key, value in (attrs or {}).items():
            h5.attrs[key] = value

        bs_compression = hdf5plugin.Bitshuffle(nelems=0, lz4=True)['compression']
        bs_compression_opts = hdf5plugin.Bitshuffle(nelems=0, lz4=True)['compression_opts']

        for gname, fields in groups.items():
            grp = h5.create_group(gname)
            for name, value in fields.items():
                data = np.asarray(value)
                if data.ndim == 0:
                    # scalars ride along as attributes
                    grp.attrs[name] = data
                    continue
                grp.create_dataset(name,
                                   data=data,
                                   compression=bs_compression,
                                   compression_opts=bs_compression_opts)

    t1 = time.time()
    logger.info('Conversion time: %2.2fsec' % (t1 - t0))


def read_fields(filename):
    """ Read back a file written by write_fields: {group -> {name -> array}}. """
    out = {}
    with h5py.File(filename, 'r') as h5:
        for gname, grp in h5.items():
            fields = {name: dset[()] for name, dset in grp.items()}
            for key, value in grp.attrs.items():
                fields[key] = value
            out[gname] = fields
    return out
