from setuptools import setup, find_packages


with open('README.md') as f:
    long_description = f.read()

setup(
    name='twlab',
    version='0.1.0',
    description='Simulation and verification lab for tilted transient random walks and walks in random environment.',
    long_description=long_description,

    license='',

    classifiers=[
        'Development Status :: 3 - Alpha',

        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',

        'Programming Language :: Python :: 3',
    ],

    keywords='random walk, random environment, monte carlo, scaling limit',

    packages=find_packages(exclude=['contrib', 'docs', 'tests*']),

    install_requires=['numpy', 'scipy', 'jsonschema', 'dpath>=2.0'],

    entry_points={
        'console_scripts': [
            'twlab = twlab.runner:main',
            'twlab-createspec = twlab.createspec:main'
        ]
    },
)
