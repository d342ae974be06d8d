"""Fitted-model documents: variational state plus the metadata needed to reuse it."""

from dataclasses import asdict, dataclass
import json

from .data import Scaling
from .model import Hyperparameters, TaskType
from .vi.state import VariationalState

MODEL_FORMAT = "mfa_mtl.Model"
MODEL_VERSION = 1


class ModelFileError(ValueError):
    """Unreadable model document, or one that does not match a dataset."""


@dataclass(frozen=True)
class FittedModel:
    state: VariationalState
    task_type: TaskType
    task_ids: tuple
    hyperparameters: Hyperparameters
    scaling: Scaling = None

    @property
    def D(self):
        return self.state.D

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "task_type": self.task_type.value,
            "task_ids": list(self.task_ids),
            "feature_dim": self.D,
            "hyperparameters": asdict(self.hyperparameters),
            "scaling": None if self.scaling is None else self.scaling.to_dict(),
            "state": self.state.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise ModelFileError("not a model document")
        if doc.get("version") != MODEL_VERSION:
            raise ModelFileError(f"unsupported model version {doc.get('version')!r}")
        try:
            state = VariationalState.from_dict(doc["state"])
            model = cls(
                state=state,
                task_type=TaskType(doc["task_type"]),
                task_ids=tuple(str(t) for t in doc["task_ids"]),
                hyperparameters=Hyperparameters(**doc["hyperparameters"]),
                scaling=None if doc["scaling"] is None else Scaling.from_dict(doc["scaling"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFileError(f"corrupt model document: {exc}") from exc
        if len(model.task_ids) != state.T or int(doc["feature_dim"]) != state.D:
            raise ModelFileError("model metadata disagrees with the stored state")
        if (state.xi is not None) != (model.task_type is TaskType.CLASSIFICATION):
            raise ModelFileError("JJ parameters present iff the model is a classifier")
        return model

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"model file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def check_compatible(self, data):
        """Raise :class:`ModelFileError` unless ``data`` has this model's tasks and features."""
        if data.D != self.D:
            raise ModelFileError(f"dataset has {data.D} features, model expects {self.D}")
        if data.task_type is not self.task_type:
            raise ModelFileError(f"dataset is {data.task_type.value}, model is {self.task_type.value}")
        if tuple(data.task_ids) != self.task_ids:
            raise ModelFileError("dataset task ids differ from the model's")

    def prepare(self, data):
        """Check compatibility and apply the stored feature scaling."""
        self.check_compatible(data)
        return data if self.scaling is None else self.scaling.apply(data)
