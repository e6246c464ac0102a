import orjson
import pytest
from polyfactory.factories.pydantic_factory import ModelFactory

from tablegraft.cli import build_parser, main
from tablegraft.config import apply_overrides, load_config
from tablegraft.dto.config import PipelineConfig
from tablegraft.dto.graph import SimilarityConfig
from tablegraft.dto.subtables import SubTableConfig
from tablegraft.errors import ConfigError


class MockSubTableConfig(ModelFactory[SubTableConfig]):
    ...


class MockSimilarityConfig(ModelFactory[SimilarityConfig]):
    ...


def write_config(path, data):
    path.write_bytes(orjson.dumps(data))
    return path


def test_defaults_without_a_file():
    config = load_config()

    assert config == PipelineConfig()
    assert config.subtables.ell == 0.8
    assert config.similarity.mode == "topk"
    assert config.experiments.seeds == [0, 1, 2, 3, 4]


def test_load_config(tmp_path):
    path = write_config(tmp_path / "run.json", {"seed": 3, "subtables": {"ell": 0.6}})

    config = load_config(path)

    assert config.seed == 3
    assert config.subtables.ell == 0.6
    assert config.subtables.method == "maximal_clique"


@pytest.mark.parametrize(
    "content",
    [
        b"{not json",
        b"[1, 2]",
        orjson.dumps({"seed": 1, "learning_rate": 0.1}),
        orjson.dumps({"subtables": {"ell": 1.5}}),
        orjson.dumps({"split": {"train": 0.9, "val": 0.2, "test": 0.1}}),
    ],
)
def test_invalid_config(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_bytes(content)

    with pytest.raises(ConfigError) as e:
        load_config(path)

    assert e.value.exit_code == 3


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_flags_override_the_file(tmp_path):
    path = write_config(tmp_path / "run.json", {"seed": 3, "output_dir": "a"})

    config = apply_overrides(load_config(path), seed=7, out=None, ell=0.25, method="girvan_newman")

    assert config.seed == 7
    assert config.output_dir == "a"
    assert config.subtables.ell == 0.25
    assert config.subtables.method == "girvan_newman"


def test_similarity_flags_switch_mode():
    threshold = PipelineConfig(similarity={"mode": "threshold", "theta": 0.7})

    assert apply_overrides(threshold, topk=4).similarity.mode == "topk"
    assert apply_overrides(threshold, topk=4).similarity.k == 4
    assert apply_overrides(PipelineConfig(), theta=0.5).similarity.mode == "threshold"


def test_invalid_override():
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), alpha=-1.0)
    with pytest.raises(ConfigError):
        apply_overrides(PipelineConfig(), learning_rate=0.1)


def test_config_digest_tracks_content():
    assert PipelineConfig().digest == PipelineConfig().digest
    assert PipelineConfig(seed=1).digest != PipelineConfig().digest


def test_flags_before_the_command_are_kept():
    args = build_parser().parse_args(["--seed", "5", "evaluate", "--split", "val"])

    assert args.seed == 5
    assert args.split == "val"
    assert build_parser().parse_args(["plan", "--seed", "6"]).seed == 6


def test_cli_missing_artifact(tmp_path, shop_dir):
    assert main(["plan", "--out", str(tmp_path / "run"), "--dataset", str(shop_dir)]) == 2


def test_cli_bad_config(tmp_path):
    assert main(["ingest", "--config", str(tmp_path / "absent.json")]) == 3


def test_cli_missing_dataset(tmp_path):
    args = ["ingest", "--out", str(tmp_path / "run"), "--dataset", str(tmp_path / "nowhere")]

    assert main(args) == 4


def test_cli_ingest(tmp_path, shop_dir):
    out = tmp_path / "run"

    assert main(["--out", str(out), "ingest", "--dataset", str(shop_dir)]) == 0
    assert (out / "load_report.json").is_file()


def test_cli_run_all(tmp_path, fast_config):
    path = write_config(tmp_path / "fast.json", fast_config.model_dump(mode="json"))

    assert main(["run-all", "--config", str(path)]) == 0
    assert (tmp_path / "run" / "metrics.json").is_file()


def test_digest_ignores_the_output_dir(fast_config):
    moved = fast_config.model_copy(update={"output_dir": "elsewhere"})

    assert moved.digest == fast_config.digest
    assert fast_config.with_seed(fast_config.seed + 1).digest != fast_config.digest


@pytest.mark.parametrize("seed", range(5))
def test_generated_sections_survive_a_file_round_trip(tmp_path, seed):
    MockSubTableConfig.seed_random(seed)
    MockSimilarityConfig.seed_random(seed)
    subtables = MockSubTableConfig.build()
    similarity = MockSimilarityConfig.build()
    path = write_config(
        tmp_path / "run.json",
        {
            "subtables": subtables.model_dump(mode="json"),
            "similarity": similarity.model_dump(mode="json"),
        },
    )

    config = load_config(path)

    assert config.subtables == subtables
    assert config.similarity == similarity
