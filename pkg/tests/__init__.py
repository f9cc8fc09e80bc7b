from os import path

here = path.dirname(path.abspath(__file__))
