# Command handlers and run-config loading for main.py