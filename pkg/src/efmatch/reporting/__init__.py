"""JUnit XML and HTML report generation."""
