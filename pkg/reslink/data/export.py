import h5py
import numpy as np

from reslink.util import get_logger

logger = get_logger(__name__)

FORMAT_VERSION = "0.1"


def prep_h5(output_name):
    """
    Create output file, prepare top level groups, write metadata.

    :param output_name: The output file name.
    :return: None
    """
    with h5py.File(output_name, 'w') as f:
        f.create_group('data')
        f.create_group('params')
        f.create_group('info')

        f.create_dataset('info/package', data=np.bytes_('reslink'))
        f.create_dataset('info/data_description', data=np.bytes_(
            'Unit-norm vectors of every knowledge-base name (/data/vectors), '
            'the name strings (/data/names) and their owning entity ids '
            '(/data/owners).'))
        f.create_dataset('version', data=np.bytes_(FORMAT_VERSION))


def export_index_h5(index, output_name):
    """
    Write a NameIndex to HDF5 for inspection with external tools.

    :param index: NameIndex.
    :param output_name: The output file name.
    """
    prep_h5(output_name)
    text = h5py.string_dtype(encoding='utf-8')
    with h5py.File(output_name, 'a') as f:
        f.create_dataset('data/vectors', data=index.vectors)
        f.create_dataset('data/names', data=np.array(index.names, dtype=object), dtype=text)
        f.create_dataset('data/owners', data=np.array(index.owners, dtype=object), dtype=text)
        f.create_dataset('params/fingerprint', data=np.frombuffer(index.fingerprint,
                                                                  dtype=np.uint8))
        f.create_dataset('params/num_names', data=len(index))
        f.create_dataset('params/num_entities', data=len(index.entity_ids))
    logger.info("Exported %d index rows to %s", len(index), output_name)


def read_index_h5(input_name):
    """
    :return: (vectors, names, owners, fingerprint)
    """
    with h5py.File(input_name, 'r') as f:
        vectors = f['data/vectors'][()]
        names = [s.decode('utf-8') if isinstance(s, bytes) else s
                 for s in f['data/names'][()]]
        owners = [s.decode('utf-8') if isinstance(s, bytes) else s
                  for s in f['data/owners'][()]]
        fingerprint = f['params/fingerprint'][()].tobytes()
    return vectors, names, owners, fingerprint
