import importlib.util
import unittest
from pathlib import Path

_spec = importlib.util.spec_from_file_location("code_under_test", Path(__file__).resolve().parents[1] / "code.py")
code = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(code)


class SessionTest(unittest.TestCase):
    def test_round_trip(self):
        blob = code.dump_session({"user": "ann", "cart": [1, 2]})
        self.assertEqual(code.load_session(blob), {"user": "ann", "cart": [1, 2]})


if __name__ == "__main__":
    unittest.main()
