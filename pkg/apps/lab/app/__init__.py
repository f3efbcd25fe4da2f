"""离散时间热流超定问题的数值刚性实验室。"""

__version__ = "0.1.0"
