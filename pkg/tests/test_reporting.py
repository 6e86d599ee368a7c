import json
import os
import tempfile
import unittest
import numpy as np

from pyhurwitz.utils.exceptions import PoleHit
from pyhurwitz.utils.reporting import Check, build_report, jsonable, write_report


class TestReporting(unittest.TestCase):
    """
    Unit tests for checks and JSON reports.
    """

    def test_check_passes_only_below_tolerance(self):
        self.assertTrue(Check("a", 1e-9, 1e-6).passed)
        self.assertFalse(Check("b", 1e-6, 1e-6).passed)
        self.assertFalse(Check("c", float("nan"), 1.0).passed)
        self.assertFalse(Check("d", float("inf"), 1.0).passed)

    def test_jsonable(self):
        """
        Complex numbers become pairs, tuple keys are 1-based, non-finite values become null.
        """
        print("\n--- Running Test: test_jsonable ---")

        # 1. A nested structure of numpy and complex values
        value = {
            (0, 1): 1.0 + 2.0j,
            "array": np.array([1j, 2.0]),
            "flag": np.bool_(True),
            "count": np.int64(3),
            "bad": float("nan"),
        }

        # 2. Convert
        converted = jsonable(value)

        # 3. Every part is plain JSON
        self.assertEqual(converted["1-2"], [1.0, 2.0])
        self.assertEqual(converted["array"], [[0.0, 1.0], [2.0, 0.0]])
        self.assertIs(converted["flag"], True)
        self.assertEqual(converted["count"], 3)
        self.assertIsNone(converted["bad"])
        json.dumps(converted, allow_nan=False)

        print("Values are converted to plain JSON.")

    def test_build_report(self):
        checks = [Check("x", 0.0, 1.0), Check("y", 2.0, 1.0)]
        report = build_report("cover build", {"seed": 1}, {"z": 1j}, checks, timestamp=False)
        self.assertEqual(set(report), {"command", "inputs", "results", "checks", "passed"})
        self.assertFalse(report["passed"])
        self.assertEqual(report["results"]["z"], [0.0, 1.0])

        failed = build_report("cover build", {}, {}, [], timestamp=True, error=PoleHit("at 2"))
        self.assertEqual(failed["error"]["kind"], "PoleHit")
        self.assertFalse(failed["passed"])
        self.assertIn("timestamp", failed)

    def test_write_report(self):
        report = build_report("verify all", {}, {}, [Check("x", 0.0, 1.0)], timestamp=False)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "report.json")
            text = write_report(path, report)
            with open(path, encoding="utf-8") as handle:
                self.assertEqual(handle.read(), text)
            self.assertEqual(sorted(os.listdir(directory)), ["report.json"])
        self.assertEqual(json.loads(write_report(None, report)), report)


if __name__ == '__main__':
    unittest.main()
