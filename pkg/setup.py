"""
setup.py -- setup script for use of packages.
"""
from setuptools import setup, find_packages

__version__ = '0.4.0'

with open("README.md", "r") as fh:
    long_description = fh.read()

# create entry points
entry_points = {
    'console_scripts' : [
        'implosion-lab = implosion_lab.pipeline:cmd_tool',
     ]
}

with open("requirements.txt", "r") as fh:
    install_requires = fh.readlines()

extras_require = {
      'full': [
          'pytest',
          'coverage',
      ]
}

setup(name='implosion-lab',
      version=__version__,
      description='Constructive imploding-shock solutions of the radial compressible Euler equations',
      long_description=long_description,
      long_description_content_type='text/markdown',
      license='BSD',
      install_requires=install_requires,
      extras_require=extras_require,
      entry_points=entry_points,
      packages=find_packages(exclude=['tests']),
      include_package_data=True,
      zip_safe=False,
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Environment :: Console',
          'Natural Language :: English',
          'Operating System :: POSIX :: Linux',
          'Programming Language :: Python :: 3.7',
          'Intended Audience :: Science/Research',
          'License :: OSI Approved :: BSD License',
          'Topic :: Scientific/Engineering :: Physics',
      ],
      setup_requires=['pytest-runner'],
      tests_require=['pytest'],
      test_suite="tests",
)
