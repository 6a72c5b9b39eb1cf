import setuptools
from io import open

requirements = [
    'numpy',
    'numba',
    'scipy',
    'h5py',
    'pytest',
    'matplotlib',
    'setuptools'
]

setuptools.setup(name='reslink',
      version='0.1.0',
      description='Residual CNN dual encoder for biomedical entity linking',
      long_description=open('README.md', encoding='utf8').read(),
      long_description_content_type="text/markdown",
      packages=setuptools.find_packages(exclude=['examples', 'examples.*']),
      license="MIT",
      install_requires=requirements,
      entry_points={
          'console_scripts': ['reslink=reslink.cli:main'],
      },
      classifiers=[
          "Programming Language :: Python :: 3",
          "License :: OSI Approved :: MIT License",
          "Operating System :: OS Independent",
      ],
      zip_safe=False)
