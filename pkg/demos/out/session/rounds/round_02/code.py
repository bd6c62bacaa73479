print('analysis for round 2')