"""
Script runner for the test files
Each test_*.py is collected by pytest and also runs on its own through run_tests
"""

import traceback
from typing import Callable, List, Sequence, Tuple

import pytest


def run_tests(title: str, tests: Sequence[Callable[[], None]]) -> bool:
    """
    Run test functions in order and print a pass/fail summary

    Args:
        title: banner text
        tests: zero-argument test functions (plain asserts)

    Returns:
        True if every test passed or was skipped
    """
    print("=" * 60)
    print(title)
    print("=" * 60)

    results: List[Tuple[str, str]] = []
    for test in tests:
        name = test.__name__
        try:
            test()
        except pytest.skip.Exception as e:
            print(f"- {name} (skipped: {e.msg})")
            results.append((name, 'SKIP'))
        except Exception:
            print(f"✗ {name}")
            traceback.print_exc()
            results.append((name, 'FAIL'))
        else:
            print(f"✓ {name}")
            results.append((name, 'PASS'))

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    labels = {'PASS': "✓ PASS", 'FAIL': "✗ FAIL", 'SKIP': "- SKIP"}
    for name, outcome in results:
        print(f"{labels[outcome]} - {name}")

    failed = sum(1 for _, outcome in results if outcome == 'FAIL')
    print("=" * 60)
    if not failed:
        print(f"\n✅ ALL {len(results)} TESTS PASSED")
    else:
        print(f"\n❌ {failed} OF {len(results)} TESTS FAILED")
    print()
    return not failed


def collect(namespace: dict) -> List[Callable[[], None]]:
    """test_* functions of a module namespace in definition order"""
    return [obj for name, obj in namespace.items() if name.startswith('test_') and callable(obj)]
