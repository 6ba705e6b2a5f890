import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from decoy_bounds.config import (
    DEFAULTS,
    ENV_HOME,
    ENV_PRECISION_BITS,
    Settings,
    cfg_get,
    load_config,
    resolve_settings,
    write_default_config,
)
from decoy_bounds.errors import ValidationError


class TestConfigFile(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.home = Path(self._tmp.name) / "home"
        self._env = mock.patch.dict(os.environ, {ENV_HOME: str(self.home)})
        self._env.start()
        os.environ.pop(ENV_PRECISION_BITS, None)

    def tearDown(self) -> None:
        self._env.stop()
        self._tmp.cleanup()

    def test_missing_file(self) -> None:
        self.assertEqual(load_config(), {})

    def test_write_defaults(self) -> None:
        path = write_default_config()
        self.assertEqual(path, self.home / "config.json")
        self.assertEqual(load_config(), json.loads(json.dumps(DEFAULTS)))

    def test_no_overwrite_without_flag(self) -> None:
        path = write_default_config()
        path.write_text('{"search": {"cap": 50}}', encoding="utf-8")
        write_default_config()
        self.assertEqual(load_config()["search"]["cap"], 50)
        write_default_config(overwrite=True)
        self.assertEqual(load_config()["search"]["cap"], 200)

    def test_corrupt_file(self) -> None:
        self.home.mkdir(parents=True)
        (self.home / "config.json").write_text("{broken", encoding="utf-8")
        self.assertEqual(load_config(), {})

    def test_file_values_used(self) -> None:
        self.home.mkdir(parents=True)
        (self.home / "config.json").write_text(
            json.dumps({"precision": {"significand_bits": 128}, "output": {"format": "csv"}}),
            encoding="utf-8",
        )
        settings = resolve_settings()
        self.assertEqual(settings.significand_bits, 128)
        self.assertEqual(settings.output_format, "csv")
        self.assertEqual(settings.cap, 200)


class TestResolveSettings(unittest.TestCase):
    def test_defaults(self) -> None:
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop(ENV_PRECISION_BITS, None)
            settings = resolve_settings({})
        self.assertEqual(settings, Settings())
        self.assertEqual(settings.precision().significand_bits, 256)

    def test_precedence(self) -> None:
        cfg = {"precision": {"significand_bits": 128}, "search": {"cap": 80}}
        with mock.patch.dict(os.environ, {ENV_PRECISION_BITS: "192"}):
            self.assertEqual(resolve_settings(cfg).significand_bits, 192)
            self.assertEqual(resolve_settings(cfg).cap, 80)
            overridden = resolve_settings(cfg, {"significand_bits": 320, "cap": None})
        self.assertEqual(overridden.significand_bits, 320)
        self.assertEqual(overridden.cap, 80)

    def test_bad_env(self) -> None:
        with mock.patch.dict(os.environ, {ENV_PRECISION_BITS: "lots"}):
            with self.assertRaises(ValidationError):
                resolve_settings({})

    def test_validation(self) -> None:
        with self.assertRaises(ValidationError):
            Settings(significand_bits=32)
        with self.assertRaises(ValidationError):
            Settings(cap=1)
        with self.assertRaises(ValidationError):
            Settings(f_ec=0.9)
        with self.assertRaises(ValidationError):
            Settings(output_format="xml")

    def test_cfg_get(self) -> None:
        cfg = {"a": {"b": 1}, "c": 2}
        self.assertEqual(cfg_get(cfg, "a", "b"), 1)
        self.assertEqual(cfg_get(cfg, "a", "x", default=7), 7)
        self.assertEqual(cfg_get(cfg, "c", "d", default=3), 3)


if __name__ == "__main__":
    unittest.main()
