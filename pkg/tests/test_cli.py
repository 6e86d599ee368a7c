import json
import os
import tempfile
import unittest
import numpy as np

from pyhurwitz.cli import build_parser, main, parse_grid, parse_pairs
from pyhurwitz.utils.exceptions import ConfigParse


class TestArgumentParsing(unittest.TestCase):
    """
    Unit tests for the option parsers of the command line.
    """

    def test_parse_grid(self):
        axes = parse_grid("x=-1:1:5, t=0:0.5:3")
        np.testing.assert_allclose(axes["x"], np.linspace(-1, 1, 5))
        np.testing.assert_allclose(axes["t"], [0.0, 0.25, 0.5])
        for bad in ("x=0:1", "x=a:1:3", "x=0:1:0", "x0:1:3"):
            with self.assertRaises(ConfigParse):
                parse_grid(bad)

    def test_parse_pairs(self):
        self.assertEqual(parse_pairs("1-2, 3-1", 3), [(0, 1), (2, 0)])
        self.assertEqual(len(parse_pairs("all", 4)), 12)
        for bad in ("1-1", "1-4", "1:2"):
            with self.assertRaises(ConfigParse):
                parse_pairs(bad, 3)

    def test_command_names(self):
        args = build_parser().parse_args(["iso", "tau-check", "--covering", "c", "--anchors", "a",
                                          "--residues", "r", "--path", "p"])
        self.assertEqual(args.command, "iso tau-check")
        with self.assertRaises(SystemExit):
            build_parser().parse_args(["cover", "build"])


class TestCommands(unittest.TestCase):
    """
    Unit tests running whole commands through main().
    """

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.covering = self._write("covering.json", '{"poles": [2], "residues": [1]}')

    def tearDown(self):
        self.directory.cleanup()

    def _write(self, name: str, text: str) -> str:
        path = os.path.join(self.directory.name, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def _run(self, argv) -> tuple:
        out = os.path.join(self.directory.name, "report.json")
        code = main(argv + ["--out", out, "--no-timestamp"])
        with open(out, encoding="utf-8") as handle:
            return code, handle.read()

    def test_cover_build(self):
        print("\n--- Running Test: test_cover_build ---")

        # 1. Run the command
        code, text = self._run(["cover", "build", "--covering", self.covering])
        report = json.loads(text)

        # 2. Exit code and checks
        self.assertEqual(code, 0)
        self.assertTrue(report["passed"])
        self.assertEqual(report["command"], "cover build")

        # 3. Critical points and branch points of the closed form
        gammas = sorted(complex(*g).real for g in report["results"]["critical_points"])
        lambdas = sorted(complex(*l).real for l in report["results"]["branch_points"])
        np.testing.assert_allclose(gammas, [1.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(lambdas, [0.0, 4.0], atol=1e-12)

        print("cover build reports the closed form.")

    def test_reports_are_reproducible(self):
        first = self._run(["cover", "verify", "--covering", self.covering, "--seed", "3"])
        second = self._run(["cover", "verify", "--covering", self.covering, "--seed", "3"])
        self.assertEqual(first, second)
        self.assertEqual(first[0], 0)
        self.assertNotIn("timestamp", json.loads(first[1]))

    def test_unreadable_input(self):
        """
        Malformed documents exit with 2 and a report carrying the error kind.
        """
        bad = self._write("bad.json", '{"poles": [2, ')
        code, text = self._run(["cover", "build", "--covering", bad])
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(text)["error"]["kind"], "ConfigParse")

    def test_residue_documents_with_wrong_schema(self):
        print("\n--- Running Test: test_residue_documents_with_wrong_schema ---")

        # 1. Two anchors, residues with a ragged first matrix
        anchors = self._write("anchors.json", '{"anchors": [[0, 0], [1, 0]]}')
        ragged = self._write("ragged.json", '{"residues": [[[0.1, 0], [0.2]], [[0, 0], [0, 0]]]}')
        code, text = self._run(["iso", "monodromy", "--anchors", anchors, "--residues", ragged])
        self.assertEqual(code, 2)
        self.assertEqual(json.loads(text)["error"]["kind"], "ConfigParse")

        # 2. A random recipe with a rank that is not an integer
        for recipe in ('{"random": {"rank": "two"}}', '{"random": {"rank": 2, "seed": 1.5}}',
                       '{"random": {"rank": 0}}', '{"random": [2]}'):
            residues = self._write("random.json", recipe)
            code, text = self._run(["iso", "monodromy", "--anchors", anchors, "--residues", residues])
            self.assertEqual(code, 2, recipe)
            report = json.loads(text)
            self.assertEqual(report["error"]["kind"], "ConfigParse")
            self.assertFalse(report["passed"])

        print("Wrong residue schemas exit with 2 and a report.")

    def test_tab_indented_json(self):
        covering = self._write("tabs.json", '{\n\t"poles": [2],\n\t"residues": [1]\n}')
        code, _ = self._run(["cover", "build", "--covering", covering])
        self.assertEqual(code, 0)

    def test_hierarchy_with_base_normalization(self):
        """
        Asking for the hierarchy on a state normalized at γ₀ is an input error.
        """
        anchors = self._write("anchors.json",
                              '{"anchors": [[0.5, 1], [3.5, -1]], "p0": [0, 2], "normalize_at_base": true}')
        residues = self._write("residues.json", '{"random": {"rank": 2, "seed": 1}}')
        path = self._write("path.json", '{"targets": [[[0.1, 0], [4, 0]]]}')
        argv = ["iso", "run", "--covering", self.covering, "--anchors", anchors, "--residues", residues,
                "--path", path, "--hierarchy"]
        code, text = self._run(argv)
        self.assertEqual(code, 2)
        report = json.loads(text)
        self.assertEqual(report["error"]["kind"], "ConfigParse")
        self.assertIn("normalize_at_base", report["error"]["message"])

        no_base = self._write("no_base.json", '{"anchors": [[0.5, 1], [3.5, -1]]}')
        code, _ = self._run(argv[:5] + [no_base] + argv[6:])
        self.assertEqual(code, 2)

    def test_numerical_error(self):
        degenerate = self._write("degenerate.json", '{"poles": [1, -1], "residues": [0.5, 0.5]}')
        code, text = self._run(["cover", "build", "--covering", degenerate])
        self.assertEqual(code, 1)
        self.assertFalse(json.loads(text)["passed"])

    def test_verify_subset(self):
        code, text = self._run(["verify", "all", "--only", "closed_form"])
        self.assertEqual(code, 0)
        self.assertEqual(list(json.loads(text)["results"]["criteria"]), ["closed_form"])
        code, _ = self._run(["verify", "all", "--only", "nonsense"])
        self.assertEqual(code, 2)


if __name__ == '__main__':
    unittest.main()
