def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: long noisy-pipeline emulations (tens of minutes)")
