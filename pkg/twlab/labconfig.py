import copy
import json
from typing import Iterable, TextIO

import dpath

DEFAULTS = {
    "runner": {
        "workers": 1,
        "log_level": "INFO",
        "default_seed": 20240117
    },
    "stats": {
        "alpha": 0.01,
        "ks_slack": 1.7,
        "ci_sigmas": 3.0
    },
    "environment": {
        "site_block": 256
    },
    "diffusion": {
        "step_budget": 100000000,
        "max_mesh": 0.1
    },
    "acceptance": {
        "random_laws": 200,
        "random_laws_seed": 7,
        "walk_paths": 20000,
        "walk_seed": 20240117,
        "potential_draws": 10000,
        "potential_seed": 20240118,
        "rwre_walks": 5000,
        "rwre_seed": 20240119,
        "seignourel_sites": 1000000,
        "seignourel_seed": 20240120
    }
}


class LabConfig:
    """
    Layered configuration. The packaged defaults are merged with every given JSON file in order,
    later files overriding values of earlier ones.
    """
    def __init__(self, fps: Iterable[TextIO]=()):
        doc = copy.deepcopy(DEFAULTS)
        for fp in fps:
            doc_load = json.load(fp)
            dpath.merge(doc, doc_load)

        self.doc = doc

        # runner
        self.workers = int(doc['runner']['workers'])
        self.log_level = doc['runner']['log_level']
        self.default_seed = int(doc['runner']['default_seed'])

        # statistics
        self.alpha = float(doc['stats']['alpha'])
        self.ks_slack = float(doc['stats']['ks_slack'])
        self.ci_sigmas = float(doc['stats']['ci_sigmas'])

        # simulation
        self.site_block = int(doc['environment']['site_block'])
        self.step_budget = int(doc['diffusion']['step_budget'])
        self.max_mesh = float(doc['diffusion']['max_mesh'])

        self.acceptance = doc['acceptance']

    @classmethod
    def from_paths(cls, paths: Iterable[str]):
        fps = []
        try:
            for path in paths:
                fps.append(open(path, 'rt'))
            return cls(fps)
        finally:
            for fp in fps:
                fp.close()

    def get(self, glob: str, default=None):
        try:
            return dpath.get(self.doc, glob)
        except KeyError:
            return default
