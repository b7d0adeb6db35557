# Configuration package for the augmentation toolkit
