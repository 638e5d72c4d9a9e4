# the examples/ corpus is reference material, not part of this test suite
collect_ignore = ["examples"]
