"""Bundled datasets.

``heart_synthetic.csv`` is a synthetic stand-in for the classic public
heart-disease tables (same schema and size; offline builds cannot fetch the
original), regenerable with ``tools/generate_heart_dataset.py``.
"""

from importlib import resources

from ..data import Bins, Dataset, EncodingSpec, OneHot, encode, load_csv


def heart_encoding_spec() -> EncodingSpec:
    """Bin the continuous columns, one-hot the categorical ones."""
    return EncodingSpec(
        columns={
            "age": Bins(cuts=(40, 47, 54, 61, 68), reference="ge_68"),
            "trestbps": Bins(cuts=(120, 140, 160), reference="lt_120"),
            "chol": Bins(cuts=(200, 240, 280), reference="lt_200"),
            "thalach": Bins(cuts=(120, 140, 160, 180), reference="ge_180"),
            "oldpeak": Bins(cuts=(0.5, 1.5, 2.5), reference="lt_0.5"),
            "cp": OneHot(categories=(1, 2, 3, 4), reference=1),
            "restecg": OneHot(categories=(0, 1, 2), reference=0),
            "slope": OneHot(categories=(1, 2, 3), reference=1),
            "ca": OneHot(categories=(0, 1, 2, 3), reference=0),
            "thal": OneHot(categories=(3, 6, 7), reference=3),
        }
    )


def _bundled_path(name: str):
    return resources.files(__package__) / name


def load_heart(encoded: bool = True) -> Dataset:
    """The bundled heart-disease-style table; encoded to indicators by default."""
    with resources.as_file(_bundled_path("heart_synthetic.csv")) as path:
        ds = load_csv(path, label_column="disease")
    if encoded:
        ds = encode(ds, heart_encoding_spec())
    return ds
