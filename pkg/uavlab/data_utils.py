"""A utility module for reading and writing the files uavlab consumes and produces."""
import json
import logging
import os

import numpy as np
import pandas as pd
import yaml

logger = logging.getLogger(__name__)


def setup_logger(filename=None, level=logging.INFO):
    """Set up the root logger used by the command line interface.

    Parameters
    ----------
    filename : str, optional
        If given, log records are also written to this file.
    level : int
        The logging level.

    Returns
    -------
    logger : logging.Logger
        The configured root logger.

    """
    root = logging.getLogger()
    root.setLevel(level)
    # Replace the handlers installed by an earlier call.
    for handler in list(root.handlers):
        if getattr(handler, 'uavlab_handler', False):
            root.removeHandler(handler)
            handler.close()
    formatter = logging.Formatter('%(asctime)s--%(levelname)s--%(message)s',
                                  datefmt='%Y-%m-%d %H:%M:%S')
    handlers = [logging.StreamHandler()]
    if filename is not None:
        handlers.append(logging.FileHandler(filename, mode='w', encoding='utf-8'))
    for handler in handlers:
        handler.uavlab_handler = True
        handler.setLevel(level)
        handler.setFormatter(formatter)
        root.addHandler(handler)
    return root


def read_yaml(path):
    """Read a YAML document into a dict.

    Parameters
    ----------
    path : str
        The file to read.

    Returns
    -------
    document : dict
        The parsed document, empty if the file is empty.

    """
    with open(path, 'r', encoding='utf-8') as yaml_file:
        document = yaml.safe_load(yaml_file)
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ValueError('Config file {} must contain a mapping at the top level.'.format(path))
    return document


def read_schedule(path):
    """Read a cell ON/OFF schedule.

    Parameters
    ----------
    path : str
        A comma-separated file with one row per cell and one column per step.

    Returns
    -------
    schedule : np.ndarray
        An int8 array of shape (K, T) holding only zeros and ones.

    """
    schedule = pd.read_csv(path, header=None).to_numpy()
    if not np.isin(schedule, (0, 1)).all():
        raise ValueError('Schedule file {} may only contain 0 and 1.'.format(path))
    return schedule.astype(np.int8)


def write_schedule(path, schedule):
    """Write a K x T ON/OFF schedule as comma-separated rows."""
    pd.DataFrame(np.asarray(schedule, dtype=int)).to_csv(path, header=False, index=False)


def write_json(path, document):
    """Write a JSON document with sorted keys."""
    with open(path, 'w', encoding='utf-8') as json_file:
        json.dump(document, json_file, indent=2, sort_keys=True)
        json_file.write('\n')


def read_json(path):
    """Read a JSON document."""
    with open(path, 'r', encoding='utf-8') as json_file:
        return json.load(json_file)


def write_jsonl(path, records):
    """Write one JSON record per line.

    Parameters
    ----------
    path : str
        The output file.
    records : iterable of dict
        The records. Numpy values are converted to plain Python values.

    """
    with open(path, 'w', encoding='utf-8') as jsonl_file:
        for record in records:
            jsonl_file.write(json.dumps(to_builtin(record), sort_keys=True))
            jsonl_file.write('\n')


def read_jsonl(path):
    """Read a JSON-lines file into a list of dicts."""
    with open(path, 'r', encoding='utf-8') as jsonl_file:
        return [json.loads(line) for line in jsonl_file if line.strip()]


def write_csv(path, frame):
    """Write a DataFrame as a UTF-8 CSV file without the index."""
    frame.to_csv(path, index=False, encoding='utf-8')
    logger.debug('Wrote %d rows to %s.', len(frame), path)


def read_csv(path):
    """Read a CSV file with a header row into a DataFrame."""
    if not os.path.isfile(path):
        raise FileNotFoundError('No CSV file at {}.'.format(path))
    return pd.read_csv(path)


def to_builtin(value):
    """Recursively convert numpy containers and scalars into JSON-serializable values."""
    if isinstance(value, dict):
        return {str(key): to_builtin(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(val) for val in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def random_state_to_dict(random):
    """Serialize the state of a RandomState into a JSON-serializable dict."""
    name, keys, pos, has_gauss, cached_gaussian = random.get_state()
    return {'name': name,
            'keys': keys.tolist(),
            'pos': int(pos),
            'has_gauss': int(has_gauss),
            'cached_gaussian': float(cached_gaussian)}


def random_state_from_dict(state):
    """Create a RandomState from the output of random_state_to_dict."""
    random = np.random.RandomState()
    random.set_state((state['name'], np.array(state['keys'], dtype=np.uint32), state['pos'],
                      state['has_gauss'], state['cached_gaussian']))
    return random


def ensure_dir(path):
    """Create a directory (and parents) if it does not exist and return its path."""
    os.makedirs(path, exist_ok=True)
    return path
