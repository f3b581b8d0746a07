# FiT - FiLM Transfer few-shot and federated toolkit
__version__ = "0.1.0"
