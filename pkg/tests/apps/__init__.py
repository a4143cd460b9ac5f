# Tests for apps
