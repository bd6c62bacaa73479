print('analysis for round 1')