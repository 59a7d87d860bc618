def pytest_configure(config):
    config.addinivalue_line("markers", "slow: suites run at full acceptance scale; deselect with -m 'not slow'")
