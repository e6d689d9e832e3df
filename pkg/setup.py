#!/usr/bin/env python
from setuptools import setup

setup(
    name = "comact",
    version = "0.1.0",
    package_dir = {'comact': 'comact'},
    packages = ['comact',
                'comact.analysis',
                'comact.homage',
                'comact.models',
                'comact.storage',
                'comact.synth',
                'comact.tools',
                'comact.training',
                'comact.visualization'
                ],
    package_data = {'comact': ['param/defaults', 'param/homage']},
    install_requires = ['numpy',
                        'scipy',
                        'matplotlib',
                        'parameters',
                        'param<2',
                        'torch',
                        'torchaudio',
                        'scikit-learn',
                        'jsonschema'],
    entry_points = {'console_scripts': ['comact = comact.cli:main']},
    author = "The comact developers",
    description = "Cooperative, compositional training of multi-modal action recognition encoders.",
    long_description = open('README.rst').read(),
    keywords = "action recognition multi-modal contrastive distillation egocentric audio scene graph",
    classifiers = ['Development Status :: 3 - Alpha',
                   'Environment :: Console',
                   'Intended Audience :: Science/Research',
                   'Natural Language :: English',
                   'Operating System :: OS Independent',
                   'Programming Language :: Python :: 3',
                   'Topic :: Scientific/Engineering :: Artificial Intelligence'],
)
