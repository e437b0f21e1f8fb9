import hypothesis

# property tests wrap Monte-Carlo style checks; wall-clock deadlines only flake
hypothesis.settings.register_profile(
    "mesugaki", deadline=None, max_examples=60,
    suppress_health_check=[hypothesis.HealthCheck.too_slow])
hypothesis.settings.load_profile("mesugaki")
