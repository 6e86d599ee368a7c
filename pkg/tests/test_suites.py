import unittest

from pyhurwitz.suites import CRITERIA, SuiteSettings, run_criterion, run_suite


class TestSuites(unittest.TestCase):
    """
    Unit tests for the acceptance suite runner.
    """

    def test_closed_form_criterion(self):
        result = run_criterion("closed_form")
        self.assertTrue(result["passed"])
        self.assertEqual({c.name for c in result["checks"]},
                         {"gamma", "alpha", "lambda", "beta_squared", "symbolic_degree_two"})

    def test_subset_is_reproducible(self):
        """
        A criterion run alone gives the same numbers as inside a larger run.
        """
        print("\n--- Running Test: test_subset_is_reproducible ---")

        # 1. Alone and as part of a subset
        alone = run_criterion("partial_fraction", seed=5)
        suite = run_suite("quick", seed=5, only=["closed_form", "partial_fraction"])

        # 2. Same residuals
        together = suite["criteria"]["partial_fraction"]
        self.assertEqual([c.value for c in alone["checks"]], [c.value for c in together["checks"]])
        self.assertTrue(suite["passed"])

        print("Criteria are independent of the rest of the suite.")

    def test_unknown_names(self):
        with self.assertRaises(ValueError):
            SuiteSettings.for_mode("thorough")
        with self.assertRaises(ValueError):
            run_criterion("everything")
        self.assertIn("hydro", CRITERIA)


if __name__ == '__main__':
    unittest.main()
