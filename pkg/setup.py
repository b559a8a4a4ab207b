from setuptools import setup, find_packages

setup(
    name="recdenoiser",
    version="0.1.0",
    description="Sequential recommendation with learned sparse attention masks and Jacobian regularization",
    author="RecDenoiser Authors",
    author_email="recdenoiser@example.com",
    packages=find_packages(exclude=["examples", "examples.*", "scripts"]),
    py_modules=["app", "config", "run"],
    install_requires=[
        "python-dotenv",
        "numpy",
        "scipy",
    ],
    entry_points={
        "console_scripts": [
            "recdenoiser=app:main",
        ],
    },
    python_requires=">=3.8",
)
