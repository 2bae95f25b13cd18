import hashlib
import os
from multiprocessing import cpu_count

import yaml


def cpu_type(x):
    return max(1, min(int(x), cpu_count()))


def filepath_type(x):
    if x:
        return os.path.abspath(x)
    else:
        return x


def canonical_yaml(params):
    """
    Stable text form of a flat parameter dict, used both as a human-readable metadata document and as hash input
    :param params: dict of str -> int/float/str/bool/None/list
    :return: YAML string with sorted keys
    """
    return yaml.safe_dump(dict(params), sort_keys=True, default_flow_style=False)


def params_hash(params):
    return hashlib.sha256(canonical_yaml(params).encode('utf-8')).hexdigest()[:16]
