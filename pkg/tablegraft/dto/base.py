from typing import ClassVar

from pydantic import BaseModel, ConfigDict, Field
from typing_extensions import Annotated


class BaseSchema(BaseModel):
    """
    Base for every persisted manifest. `__artifact__` is the file name the
    ArtifactStore reads and writes the model under, `__stage__` the CLI command
    that produces it.
    """
    __artifact__: ClassVar[str] = ""
    __stage__: ClassVar[str] = ""

    model_config = ConfigDict(frozen=True)


class ArtifactStamp(BaseModel):
    stage: Annotated[str, Field(title="Producing Stage")]
    version: Annotated[str, Field(title="Package Version")]
    seed: Annotated[int, Field(title="Root Seed")]
    config_digest: Annotated[str, Field(title="Config Digest")]
