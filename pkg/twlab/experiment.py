"""
Experiment specs: one JSON object per file describing what a run simulates and where it writes.
"""

import json
import os
from typing import List

from jsonschema import ValidationError as SchemaError
from jsonschema import validate

from . import valuechecks

KINDS = ['tilt-inspect', 'walk-sim', 'rwre-sim', 'diffusion-sim', 'convergence-report']

experiment_schema = {
    "type": "object",
    "properties": {
        "kind":         {"enum": KINDS},
        "law":          {"type": "string"},
        "env":          {"type": "string"},
        "epsilon":      {"type": "number"},
        "m":            {"type": "array", "items": {"type": "integer"}},
        "T":            {"type": "number"},
        "paths":        {"type": "integer"},
        "seed":         {"type": "integer"},
        "out":          {"type": "string"},
        "mode":         {"enum": ["annealed", "quenched"]},
        "construction": {"enum": ["tilted", "seignourel"]},
        "sigma":        {"type": "number"},
        "kappa":        {"type": "number"},
        "h":            {"type": "number"},
        "lambdas":      {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "eps":          {"type": "number", "exclusiveMinimum": 0},
        "save_paths":   {"type": "integer", "minimum": 0},
        "acceptance":   {
            "type": "object",
            "properties": {
                "criteria": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 9}},
            },
        },
    },
    "required": ["kind"],
    "additionalProperties": False,
}

required_fields = {
    'tilt-inspect': ['law', 'm'],
    'walk-sim': ['law', 'm', 'T', 'paths', 'out'],
    'rwre-sim': ['env', 'm', 'T', 'paths', 'out'],
    'diffusion-sim': ['sigma', 'kappa', 'h', 'T', 'paths', 'out'],
    'convergence-report': ['out'],
}

defaults = {
    'mode': 'annealed',
    'construction': 'tilted',
    'save_paths': 100,
    'eps': 0.1,
}


class SpecError(Exception):
    pass


class ExperimentSpec:
    """
    A validated experiment spec. Fields are available as items (spec['m']); missing optional
    fields fall back to their defaults. The seed may be left out of the file and supplied later.
    """
    def __init__(self, doc: dict):
        try:
            validate(doc, experiment_schema)
        except SchemaError as e:
            raise SpecError("invalid experiment spec: {}".format(e.message)) from e

        kind = doc['kind']
        missing = [name for name in required_fields[kind] if name not in doc]
        if len(missing) > 0:
            raise SpecError("{} needs the fields {}".format(kind, ', '.join(missing)))

        failed = valuechecks.failed_checks(doc)
        if len(failed) > 0:
            raise SpecError("fields with invalid values: {}".format(', '.join(failed)))

        self.doc = dict(doc)
        self.kind = kind

    @classmethod
    def load(cls, path: str):
        try:
            with open(path, 'rt') as fp:
                doc = json.load(fp)
        except OSError as e:
            raise SpecError("cannot read {}: {}".format(path, e)) from e
        except ValueError as e:
            raise SpecError("{} is not valid JSON: {}".format(path, e)) from e
        return cls(doc)

    def __getitem__(self, name):
        if name in self.doc:
            return self.doc[name]
        return defaults[name]

    def __contains__(self, name):
        return name in self.doc

    def get(self, name, default=None):
        return self.doc.get(name, defaults.get(name, default))

    def with_seed(self, seed: int):
        """A copy with the seed filled in, unless the spec names its own."""
        if 'seed' in self.doc:
            return self
        return ExperimentSpec(dict(self.doc, seed=seed))

    @property
    def m_list(self) -> List[int]:
        return list(self.doc['m'])

    @property
    def out(self) -> str:
        return self.doc.get('out')

    def check_files(self):
        """Checks that every referenced law file exists; parsing happens when the run starts."""
        for name in ('law', 'env'):
            if name in self.doc and not os.path.isfile(self.doc[name]):
                raise SpecError("{} file {!r} does not exist".format(name, self.doc[name]))

    def to_json(self) -> str:
        return json.dumps(self.doc, sort_keys=True, indent=2) + '\n'
